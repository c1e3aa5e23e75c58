#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msplat/common.hpp"

namespace msplat {

/// One camera channel group. A wide RGB camera contributes three channels;
/// narrow-band sensors contribute one channel each.
struct BandDescriptor {
    std::string name;
    int channel_count = 1;
    std::optional<double> wavelength_nm;

    /// Narrow single-channel bands are the "multi-spectral" set; the
    /// three-channel group is treated as RGB.
    bool is_rgb() const { return channel_count == 3; }
};

/// Ordered set of spectral bands. Band order fixes the channel layout of
/// decoded color vectors: band b occupies channels
/// [channel_offset(b), channel_offset(b) + channel_count).
struct SpectralBandSet {
    std::vector<BandDescriptor> bands;

    SpectralBandSet() = default;
    explicit SpectralBandSet(std::vector<BandDescriptor> b) : bands(std::move(b)) {
        for (size_t i = 0; i < bands.size(); ++i) {
            require(bands[i].channel_count > 0, ErrorClass::manifest_error,
                    "band '" + bands[i].name + "' has non-positive channel count");
            for (size_t j = i + 1; j < bands.size(); ++j)
                require(bands[i].name != bands[j].name, ErrorClass::manifest_error,
                        "duplicate band name '" + bands[i].name + "'");
        }
    }

    int size() const { return static_cast<int>(bands.size()); }

    int total_channels() const {
        int n = 0;
        for (const auto& b : bands) n += b.channel_count;
        return n;
    }

    int channel_offset(int band_index) const {
        require(band_index >= 0 && band_index < size(), ErrorClass::index_out_of_range,
                "band index out of range");
        int off = 0;
        for (int i = 0; i < band_index; ++i) off += bands[i].channel_count;
        return off;
    }

    int find(const std::string& name) const {
        for (size_t i = 0; i < bands.size(); ++i)
            if (bands[i].name == name) return static_cast<int>(i);
        return -1;
    }

    int find_or_throw(const std::string& name) const {
        int i = find(name);
        require(i >= 0, ErrorClass::band_not_found, "band '" + name + "' not in band set");
        return i;
    }

    const BandDescriptor& operator[](int i) const { return bands[static_cast<size_t>(i)]; }
};

/// The five-camera capture rig: wide RGB plus four narrow bands, 7 channels
/// in total.
inline SpectralBandSet default_band_set() {
    return SpectralBandSet{{
        {"RGB", 3, std::nullopt},
        {"G", 1, 560.0},
        {"R", 1, 650.0},
        {"RE", 1, 730.0},
        {"NIR", 1, 860.0},
    }};
}

}  // namespace msplat

#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "msplat/bands.hpp"
#include "msplat/common.hpp"

namespace msplat {

/// Band manifest: which physical camera records which spectral band. Stored
/// as bands.toml next to the sparse reconstruction, one [[band]] table per
/// band in band-set order:
///
///   [[band]]
///   name = "NIR"
///   camera_id = 5
///   channels = 1
///   wavelength_nm = 860.0
struct BandManifest {
    SpectralBandSet bands;
    std::map<int, int> camera_to_band;  // camera_id -> band index

    int band_for_camera(int camera_id) const {
        auto it = camera_to_band.find(camera_id);
        require(it != camera_to_band.end(), ErrorClass::manifest_error,
                "camera id " + std::to_string(camera_id) + " has no band mapping");
        return it->second;
    }
};

namespace manifest_detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

}  // namespace manifest_detail

inline BandManifest read_band_manifest(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorClass::manifest_error, "cannot open manifest '" + path + "'");

    struct Entry {
        std::string name;
        int camera_id = -1;
        int channels = -1;
        std::optional<double> wavelength;
    };
    std::vector<Entry> entries;
    Entry* cur = nullptr;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = manifest_detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t == "[[band]]") {
            entries.emplace_back();
            cur = &entries.back();
            continue;
        }
        size_t eq = t.find('=');
        require(eq != std::string::npos && cur != nullptr, ErrorClass::manifest_error,
                "manifest line " + std::to_string(line_no) + " is not inside a [[band]] table");
        std::string key = manifest_detail::trim(t.substr(0, eq));
        std::string value = manifest_detail::trim(t.substr(eq + 1));
        if (key == "name") {
            cur->name = manifest_detail::unquote(value);
        } else if (key == "camera_id") {
            cur->camera_id = std::stoi(value);
        } else if (key == "channels") {
            cur->channels = std::stoi(value);
        } else if (key == "wavelength_nm") {
            cur->wavelength = std::stod(value);
        } else {
            fail(ErrorClass::manifest_error, "unknown manifest key '" + key + "'");
        }
    }
    require(!entries.empty(), ErrorClass::manifest_error, "manifest declares no bands");

    BandManifest manifest;
    std::vector<BandDescriptor> descriptors;
    for (size_t i = 0; i < entries.size(); ++i) {
        const Entry& e = entries[i];
        require(!e.name.empty() && e.camera_id >= 0 && e.channels > 0, ErrorClass::manifest_error,
                "band table missing name, camera_id or channels");
        require(!manifest.camera_to_band.count(e.camera_id), ErrorClass::manifest_error,
                "camera id " + std::to_string(e.camera_id) + " mapped to two bands");
        descriptors.push_back({e.name, e.channels, e.wavelength});
        manifest.camera_to_band[e.camera_id] = static_cast<int>(i);
    }
    manifest.bands = SpectralBandSet(std::move(descriptors));
    return manifest;
}

inline void write_band_manifest(const std::string& path, const SpectralBandSet& bands,
                                const std::map<int, int>& camera_to_band) {
    std::ofstream out(path);
    require(out.good(), ErrorClass::io_error, "cannot write manifest '" + path + "'");
    for (int b = 0; b < bands.size(); ++b) {
        int camera_id = -1;
        for (const auto& [cam, band] : camera_to_band)
            if (band == b) camera_id = cam;
        out << "[[band]]\n";
        out << "name = \"" << bands[b].name << "\"\n";
        out << "camera_id = " << camera_id << "\n";
        out << "channels = " << bands[b].channel_count << "\n";
        if (bands[b].wavelength_nm) out << "wavelength_nm = " << *bands[b].wavelength_nm << "\n";
        out << "\n";
    }
}

}  // namespace msplat

#pragma once

// Multi-spectral Gaussian splatting: shared-geometry scene with a neural
// per-primitive color representation, differentiable tile rasterizer,
// band-aware densification, spectral metrics and vegetation-index tooling.

#include "msplat/adam.hpp"
#include "msplat/bands.hpp"
#include "msplat/camera.hpp"
#include "msplat/cloud.hpp"
#include "msplat/common.hpp"
#include "msplat/decoder.hpp"
#include "msplat/densify.hpp"
#include "msplat/image.hpp"
#include "msplat/io/checkpoint.hpp"
#include "msplat/io/colmap.hpp"
#include "msplat/io/dataset.hpp"
#include "msplat/io/image_io.hpp"
#include "msplat/io/manifest.hpp"
#include "msplat/io/synthetic.hpp"
#include "msplat/losses.hpp"
#include "msplat/metrics.hpp"
#include "msplat/projection.hpp"
#include "msplat/rasterizer.hpp"
#include "msplat/registration.hpp"
#include "msplat/render.hpp"
#include "msplat/sh_model.hpp"
#include "msplat/train_config.hpp"
#include "msplat/trainer.hpp"
#include "msplat/vi.hpp"

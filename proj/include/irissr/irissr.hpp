#pragma once

// All library modules. pipeline.hpp (the artifact-on-disk stage layer used by
// the CLI) is left out because it also needs nlohmann/json.

#include "irissr/error.hpp"
#include "irissr/hash.hpp"
#include "irissr/rng.hpp"
#include "irissr/parallel.hpp"
#include "irissr/raster.hpp"
#include "irissr/image_io.hpp"
#include "irissr/fft.hpp"
#include "irissr/dataset.hpp"
#include "irissr/synth.hpp"
#include "irissr/eigenpatch.hpp"
#include "irissr/sr.hpp"
#include "irissr/reproject.hpp"
#include "irissr/quality.hpp"
#include "irissr/iriscode.hpp"
#include "irissr/siftmatch.hpp"
#include "irissr/fusion_eval.hpp"

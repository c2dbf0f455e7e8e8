#pragma once

#include "siteline/errors.hpp"
#include "siteline/raster.hpp"
#include "siteline/image_io.hpp"
#include "siteline/kernels.hpp"
#include "siteline/convolve.hpp"
#include "siteline/operators.hpp"
#include "siteline/geo.hpp"
#include "siteline/tiles.hpp"
#include "siteline/outline.hpp"
#include "siteline/synth.hpp"
#include "siteline/pipeline.hpp"

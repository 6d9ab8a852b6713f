#pragma once

#include "cubist/bench.hpp"
#include "cubist/error.hpp"
#include "cubist/grid.hpp"
#include "cubist/grid_file.hpp"
#include "cubist/matching.hpp"
#include "cubist/merge_map.hpp"
#include "cubist/merge_repr.hpp"
#include "cubist/pipeline.hpp"
#include "cubist/synth.hpp"
#include "cubist/toy_vit.hpp"

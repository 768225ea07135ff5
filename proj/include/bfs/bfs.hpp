#pragma once

// Umbrella header for the BGS -> BFS retrieval toolkit.

#include "bfs/bench.hpp"
#include "bfs/dataset.hpp"
#include "bfs/errors.hpp"
#include "bfs/io.hpp"
#include "bfs/kvconfig.hpp"
#include "bfs/lcf.hpp"
#include "bfs/network.hpp"
#include "bfs/parallel.hpp"
#include "bfs/resample.hpp"
#include "bfs/rng.hpp"
#include "bfs/spectrum.hpp"
#include "bfs/trace.hpp"
#include "bfs/train.hpp"
#include "bfs/version.hpp"

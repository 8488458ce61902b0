#pragma once

#include "graphloc/error.hpp"
#include "graphloc/rng.hpp"
#include "graphloc/geograph.hpp"
#include "graphloc/graph_io.hpp"
#include "graphloc/walker.hpp"
#include "graphloc/synthfeat.hpp"
#include "graphloc/feature_io.hpp"
#include "graphloc/gnn.hpp"
#include "graphloc/optim.hpp"
#include "graphloc/checkpoint.hpp"
#include "graphloc/kdtree.hpp"
#include "graphloc/retrieval.hpp"
#include "graphloc/bvm.hpp"
#include "graphloc/pipeline.hpp"
#include "graphloc/metrics.hpp"
#include "graphloc/train.hpp"
#include "graphloc/evalbench.hpp"
#include "graphloc/config.hpp"

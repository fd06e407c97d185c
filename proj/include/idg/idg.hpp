#pragma once

#include "idg/core.hpp"
#include "idg/experiment.hpp"
#include "idg/instance_gen.hpp"
#include "idg/io.hpp"
#include "idg/laplacian.hpp"
#include "idg/layout.hpp"
#include "idg/local_opt.hpp"
#include "idg/maxent.hpp"
#include "idg/metrics.hpp"
#include "idg/octree.hpp"
#include "idg/pdb.hpp"
#include "idg/random.hpp"

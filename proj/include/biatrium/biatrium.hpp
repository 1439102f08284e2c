#pragma once

#include "biatrium/backend.hpp"
#include "biatrium/error.hpp"
#include "biatrium/geometry.hpp"
#include "biatrium/grid.hpp"
#include "biatrium/gzip.hpp"
#include "biatrium/loss.hpp"
#include "biatrium/mclahe.hpp"
#include "biatrium/metrics.hpp"
#include "biatrium/nifti.hpp"
#include "biatrium/phantom.hpp"
#include "biatrium/pipeline.hpp"
#include "biatrium/placement_io.hpp"
#include "biatrium/report.hpp"
#include "biatrium/spatial_index.hpp"

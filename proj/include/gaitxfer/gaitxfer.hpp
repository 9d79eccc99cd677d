#pragma once

#include "gaitxfer/autoenc.hpp"
#include "gaitxfer/classify.hpp"
#include "gaitxfer/dataio/archive.hpp"
#include "gaitxfer/dataio/dataset.hpp"
#include "gaitxfer/dataio/fingerprint.hpp"
#include "gaitxfer/dataio/models.hpp"
#include "gaitxfer/dataio/synth.hpp"
#include "gaitxfer/harness.hpp"
#include "gaitxfer/numerics/gradcheck.hpp"
#include "gaitxfer/numerics/graph.hpp"
#include "gaitxfer/numerics/ops.hpp"
#include "gaitxfer/numerics/optimizer.hpp"
#include "gaitxfer/numerics/parameters.hpp"
#include "gaitxfer/numerics/rng.hpp"
#include "gaitxfer/numerics/summary.hpp"
#include "gaitxfer/numerics/tensor.hpp"
#include "gaitxfer/pipeline.hpp"
#include "gaitxfer/reduce.hpp"
#include "gaitxfer/sigprep.hpp"
#include "gaitxfer/statfeat.hpp"

#pragma once

// Umbrella header.

#include "bcqforge/error.hpp"
#include "bcqforge/random.hpp"

#include "bcqforge/nn/checkpoint.hpp"
#include "bcqforge/nn/layers.hpp"
#include "bcqforge/nn/ops.hpp"
#include "bcqforge/nn/optimizer.hpp"
#include "bcqforge/nn/tape.hpp"
#include "bcqforge/nn/tensor.hpp"

#include "bcqforge/data/cohort.hpp"
#include "bcqforge/data/ingest.hpp"
#include "bcqforge/data/preprocess.hpp"
#include "bcqforge/data/replay_buffer.hpp"
#include "bcqforge/rewards.hpp"

#include "bcqforge/sim/kmeans.hpp"
#include "bcqforge/sim/pearson.hpp"
#include "bcqforge/sim/policy_simulation.hpp"
#include "bcqforge/sim/simulator.hpp"

#include "bcqforge/encoders/encoder.hpp"
#include "bcqforge/encoders/ode.hpp"
#include "bcqforge/encoders/pretrain.hpp"
#include "bcqforge/encoders/spline.hpp"

#include "bcqforge/bcq/bcq.hpp"
#include "bcqforge/bcq/classifier.hpp"
#include "bcqforge/ope/baselines.hpp"
#include "bcqforge/ope/evaluation.hpp"
#include "bcqforge/ope/wis.hpp"
#include "bcqforge/transfer/transfer.hpp"

#include "bcqforge/experiment/config.hpp"
#include "bcqforge/experiment/pipeline.hpp"

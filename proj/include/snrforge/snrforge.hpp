#pragma once

#include "snrforge/checkpoint.hpp"
#include "snrforge/compare.hpp"
#include "snrforge/config.hpp"
#include "snrforge/dataset.hpp"
#include "snrforge/diffusion.hpp"
#include "snrforge/errors.hpp"
#include "snrforge/eval.hpp"
#include "snrforge/io.hpp"
#include "snrforge/mlp.hpp"
#include "snrforge/normal.hpp"
#include "snrforge/rng.hpp"
#include "snrforge/sampler.hpp"
#include "snrforge/schedule.hpp"
#include "snrforge/schedule_json.hpp"
#include "snrforge/train.hpp"
#include "snrforge/weighting.hpp"

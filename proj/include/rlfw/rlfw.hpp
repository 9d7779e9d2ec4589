#pragma once

#include "rlfw/balance.hpp"
#include "rlfw/config.hpp"
#include "rlfw/dataset.hpp"
#include "rlfw/eval.hpp"
#include "rlfw/learners.hpp"
#include "rlfw/pipeline.hpp"
#include "rlfw/simulator.hpp"
#include "rlfw/stream.hpp"
#include "rlfw/trace.hpp"

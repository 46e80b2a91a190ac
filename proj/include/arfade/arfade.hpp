#pragma once

#include "acov.hpp"
#include "channel.hpp"
#include "core.hpp"
#include "experiment.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "random.hpp"
#include "tracking.hpp"
#include "yule_walker.hpp"

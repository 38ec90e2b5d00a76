#pragma once

#include "platoon_marl/errors.hpp"
#include "platoon_marl/units.hpp"
#include "platoon_marl/rng.hpp"
#include "platoon_marl/config.hpp"
#include "platoon_marl/config_io.hpp"
#include "platoon_marl/channel.hpp"
#include "platoon_marl/env.hpp"
#include "platoon_marl/reward.hpp"
#include "platoon_marl/nn.hpp"
#include "platoon_marl/replay.hpp"
#include "platoon_marl/marl.hpp"
#include "platoon_marl/metrics.hpp"
#include "platoon_marl/experiment.hpp"

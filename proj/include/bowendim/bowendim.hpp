#pragma once

#include "bowendim/bowen.hpp"
#include "bowendim/common.hpp"
#include "bowendim/dimension.hpp"
#include "bowendim/gibbs.hpp"
#include "bowendim/model.hpp"
#include "bowendim/model_io.hpp"
#include "bowendim/perron.hpp"
#include "bowendim/potentials.hpp"
#include "bowendim/pressure.hpp"
#include "bowendim/realization.hpp"
#include "bowendim/subshift.hpp"

namespace bowendim {
constexpr const char* kVersion = "0.1.0";
}

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "engel/core/field.hpp"
#include "engel/core/integrator.hpp"
#include "engel/core/jet.hpp"
#include "engel/core/linalg.hpp"
#include "engel/core/point.hpp"
#include "engel/deformation.hpp"
#include "engel/distributions.hpp"
#include "engel/expr.hpp"
#include "engel/normal_form.hpp"
#include "engel/prolongation.hpp"
#include "engel/zoll.hpp"

namespace engel {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace engel

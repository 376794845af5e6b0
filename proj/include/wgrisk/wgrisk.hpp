#pragma once

#include "wgrisk/rng.hpp"
#include "wgrisk/model.hpp"
#include "wgrisk/estimators.hpp"
#include "wgrisk/risk.hpp"
#include "wgrisk/bounds.hpp"
#include "wgrisk/primitives.hpp"
#include "wgrisk/harness.hpp"

#pragma once

#include "fegan/trainer/adam.hpp"
#include "fegan/trainer/config.hpp"
#include "fegan/trainer/data.hpp"
#include "fegan/trainer/evaluate.hpp"
#include "fegan/trainer/loop.hpp"
#include "fegan/trainer/model.hpp"
#include "fegan/trainer/step.hpp"

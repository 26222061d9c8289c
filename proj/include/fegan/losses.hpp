#pragma once

#include "fegan/losses/features.hpp"
#include "fegan/losses/losses.hpp"

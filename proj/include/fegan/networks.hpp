#pragma once

#include "fegan/networks/discriminator.hpp"
#include "fegan/networks/generator.hpp"
#include "fegan/networks/layers.hpp"
#include "fegan/networks/params.hpp"

#pragma once

#include "fegan/service/model.hpp"
#include "fegan/service/server.hpp"
#include "fegan/service/wire.hpp"

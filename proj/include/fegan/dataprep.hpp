#pragma once

#include "fegan/dataprep/batch.hpp"
#include "fegan/dataprep/color.hpp"
#include "fegan/dataprep/filters.hpp"
#include "fegan/dataprep/sketch.hpp"
#include "fegan/dataprep/build.hpp"
#include "fegan/dataprep/fixture.hpp"

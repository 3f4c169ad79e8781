#pragma once

#include "dsddmm/algorithms/common.hpp"
#include "dsddmm/algorithms/driver.hpp"

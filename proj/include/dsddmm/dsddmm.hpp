#pragma once

#include "dsddmm/algorithms.hpp"
#include "dsddmm/costmodel.hpp"
#include "dsddmm/error.hpp"
#include "dsddmm/fabric.hpp"
#include "dsddmm/generate.hpp"
#include "dsddmm/kernels.hpp"
#include "dsddmm/layout.hpp"
#include "dsddmm/matrix.hpp"
#include "dsddmm/matrix_market.hpp"

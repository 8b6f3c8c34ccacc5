#ifndef SLOPEONE_SLOPEONE_HPP
#define SLOPEONE_SLOPEONE_HPP

#include "slopeone/core.hpp"
#include "slopeone/data_io.hpp"
#include "slopeone/deviation.hpp"
#include "slopeone/harness.hpp"
#include "slopeone/predictors.hpp"
#include "slopeone/text.hpp"

#endif  // SLOPEONE_SLOPEONE_HPP

#pragma once

#include "icph/em.hpp"
#include "icph/io.hpp"
#include "icph/model.hpp"
#include "icph/numeric.hpp"
#include "icph/rng.hpp"
#include "icph/simulate.hpp"
#include "icph/spline.hpp"
#include "icph/variance.hpp"
#include "icph/version.hpp"

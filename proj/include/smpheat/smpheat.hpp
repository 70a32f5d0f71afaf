#pragma once

#include "smpheat/adjoint.hpp"
#include "smpheat/coefficients.hpp"
#include "smpheat/config.hpp"
#include "smpheat/duality.hpp"
#include "smpheat/ensemble.hpp"
#include "smpheat/error.hpp"
#include "smpheat/estimates.hpp"
#include "smpheat/experiments.hpp"
#include "smpheat/forward.hpp"
#include "smpheat/model.hpp"
#include "smpheat/noise.hpp"
#include "smpheat/parallel.hpp"
#include "smpheat/regression.hpp"
#include "smpheat/schatten.hpp"
#include "smpheat/spectral.hpp"
#include "smpheat/variation.hpp"

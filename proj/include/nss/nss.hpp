#pragma once

#include "nss/bounds.hpp"
#include "nss/divergence.hpp"
#include "nss/error.hpp"
#include "nss/experiments.hpp"
#include "nss/gaussian.hpp"
#include "nss/importance_sampling.hpp"
#include "nss/quadrature.hpp"
#include "nss/random.hpp"

#pragma once

#include "mimocap/matrix_core.hpp"
#include "mimocap/random.hpp"
#include "mimocap/channel_model.hpp"
#include "mimocap/covariance.hpp"
#include "mimocap/canonical_solver.hpp"
#include "mimocap/emi_approx.hpp"
#include "mimocap/monte_carlo.hpp"
#include "mimocap/optimizer.hpp"

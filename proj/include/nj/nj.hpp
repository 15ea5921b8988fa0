#pragma once

#include "nj/error.hpp"
#include "nj/math.hpp"
#include "nj/rng.hpp"
#include "nj/index_set.hpp"
#include "nj/design.hpp"
#include "nj/index_rules.hpp"
#include "nj/linalg.hpp"
#include "nj/spectral.hpp"
#include "nj/outcome_model.hpp"
#include "nj/proxy.hpp"
#include "nj/core.hpp"
#include "nj/fourier.hpp"
#include "nj/baselines.hpp"

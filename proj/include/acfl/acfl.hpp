#pragma once

#include "acfl/analysis.hpp"
#include "acfl/coding.hpp"
#include "acfl/config.hpp"
#include "acfl/csv.hpp"
#include "acfl/dataset.hpp"
#include "acfl/errors.hpp"
#include "acfl/harness.hpp"
#include "acfl/numerics.hpp"
#include "acfl/privacy.hpp"
#include "acfl/training.hpp"

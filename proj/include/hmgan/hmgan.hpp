#pragma once

// umbrella header

#include "hmgan/autodiff.hpp"
#include "hmgan/config.hpp"
#include "hmgan/dataset.hpp"
#include "hmgan/ere_bounds.hpp"
#include "hmgan/errors.hpp"
#include "hmgan/metrics.hpp"
#include "hmgan/prop1.hpp"
#include "hmgan/regularizers.hpp"
#include "hmgan/report.hpp"
#include "hmgan/rng.hpp"
#include "hmgan/stack.hpp"
#include "hmgan/tensor.hpp"
#include "hmgan/train.hpp"
#include "hmgan/version.hpp"

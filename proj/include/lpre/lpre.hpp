#pragma once

#include "lpre/dataset.hpp"
#include "lpre/errors.hpp"
#include "lpre/inference.hpp"
#include "lpre/kernel_smoother.hpp"
#include "lpre/lpre_fit.hpp"
#include "lpre/parallel.hpp"
#include "lpre/random.hpp"
#include "lpre/reparam.hpp"
#include "lpre/simulation.hpp"

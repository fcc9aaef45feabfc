#pragma once

// Everything in one include.

#include "enreg/cnn.hpp"
#include "enreg/elm.hpp"
#include "enreg/errors.hpp"
#include "enreg/io.hpp"
#include "enreg/patch.hpp"
#include "enreg/pca.hpp"
#include "enreg/pipeline.hpp"
#include "enreg/report.hpp"
#include "enreg/rng.hpp"
#include "enreg/solvers.hpp"
#include "enreg/standardize.hpp"
#include "enreg/svm_reduction.hpp"
#include "enreg/synthetic.hpp"
#include "enreg/types.hpp"

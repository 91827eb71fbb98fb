#pragma once

#include "capsqda/baselines.hpp"
#include "capsqda/capsolver.hpp"
#include "capsqda/classifier.hpp"
#include "capsqda/csv.hpp"
#include "capsqda/dataset.hpp"
#include "capsqda/features.hpp"
#include "capsqda/model_io.hpp"
#include "capsqda/parallel.hpp"
#include "capsqda/rng.hpp"
#include "capsqda/scalar.hpp"
#include "capsqda/simbench.hpp"

#pragma once

#include "ssg/checks.hpp"
#include "ssg/config.hpp"
#include "ssg/csv.hpp"
#include "ssg/estimators.hpp"
#include "ssg/model.hpp"
#include "ssg/parallel.hpp"
#include "ssg/quadrature.hpp"
#include "ssg/sampler.hpp"
#include "ssg/spectra.hpp"
#include "ssg/stats.hpp"
#include "ssg/transforms.hpp"

#ifndef GVCPLM_GVCPLM_HPP
#define GVCPLM_GVCPLM_HPP

#include "gvcplm/csv.hpp"
#include "gvcplm/cv.hpp"
#include "gvcplm/dataset.hpp"
#include "gvcplm/dbe.hpp"
#include "gvcplm/errors.hpp"
#include "gvcplm/family.hpp"
#include "gvcplm/inference.hpp"
#include "gvcplm/kernel.hpp"
#include "gvcplm/local_fit.hpp"
#include "gvcplm/profile.hpp"
#include "gvcplm/report.hpp"
#include "gvcplm/sim.hpp"

#endif  // GVCPLM_GVCPLM_HPP

#ifndef AHB_AHB_HPP
#define AHB_AHB_HPP

#include "ahb/certify.hpp"
#include "ahb/error.hpp"
#include "ahb/objective.hpp"
#include "ahb/prox.hpp"
#include "ahb/solvers.hpp"
#include "ahb/summary.hpp"
#include "ahb/trace.hpp"

#endif  // AHB_AHB_HPP

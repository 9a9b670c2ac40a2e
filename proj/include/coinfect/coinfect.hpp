#pragma once

#include "coinfect/error.hpp"
#include "coinfect/params.hpp"
#include "coinfect/system.hpp"
#include "coinfect/equilibria.hpp"
#include "coinfect/lcp.hpp"
#include "coinfect/lcp_model.hpp"
#include "coinfect/integrator.hpp"
#include "coinfect/dynamics.hpp"
#include "coinfect/sweep.hpp"
#include "coinfect/config.hpp"

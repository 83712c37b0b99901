#pragma once

// Convenience umbrella header for the whole library.

#include "poly.hpp"
#include "quadrature.hpp"
#include "linalg.hpp"
#include "mesh.hpp"
#include "forms.hpp"
#include "sensitivity.hpp"
#include "equilibration.hpp"
#include "bounds.hpp"
#include "harness.hpp"

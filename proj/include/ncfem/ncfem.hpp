#pragma once

#include "ncfem/common.hpp"
#include "ncfem/mesh.hpp"
#include "ncfem/refine.hpp"
#include "ncfem/quadrature.hpp"
#include "ncfem/space.hpp"
#include "ncfem/problem.hpp"
#include "ncfem/assembly.hpp"
#include "ncfem/interpolation.hpp"
#include "ncfem/linalg.hpp"
#include "ncfem/newton.hpp"
#include "ncfem/estimator.hpp"
#include "ncfem/afem.hpp"
#include "ncfem/verify.hpp"
#include "ncfem/io.hpp"

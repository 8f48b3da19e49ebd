#pragma once

// Everything: mesh, elements, spaces, assembly, solvers and studies.

#include "mcs/assembly.hpp"
#include "mcs/condense.hpp"
#include "mcs/element_check.hpp"
#include "mcs/interpolation.hpp"
#include "mcs/linsolve.hpp"
#include "mcs/manufactured.hpp"
#include "mcs/mesh.hpp"
#include "mcs/space.hpp"
#include "mcs/study.hpp"
#include "mcs/taylor_hood.hpp"

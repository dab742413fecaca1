#pragma once

#include "fshapes/config.hpp"
#include "fshapes/dynamics.hpp"
#include "fshapes/fem_norms.hpp"
#include "fshapes/fshape.hpp"
#include "fshapes/io.hpp"
#include "fshapes/kernels.hpp"
#include "fshapes/matching.hpp"
#include "fshapes/primitives.hpp"
#include "fshapes/sphere_oracle.hpp"
#include "fshapes/varifold.hpp"

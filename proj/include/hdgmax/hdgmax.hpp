#pragma once

// Umbrella header: mesh, bases, local and global assembly, solvers, the
// manufactured cases, the experiment harness, output writers and checks.

#include "hdgmax/checks.hpp"
#include "hdgmax/harness.hpp"
#include "hdgmax/io.hpp"

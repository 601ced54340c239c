#include <doctest.h>

#include "mothernet/bench.hpp"

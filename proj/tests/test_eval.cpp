#include <doctest.h>

#include "mothernet/eval.hpp"

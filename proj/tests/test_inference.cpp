#include <doctest.h>

#include "mothernet/inference.hpp"

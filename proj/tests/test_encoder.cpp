#include <doctest.h>

#include "mothernet/encoder.hpp"

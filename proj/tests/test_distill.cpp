#include <doctest.h>

#include "mothernet/distill.hpp"

#include <doctest.h>

#include "mothernet/meta_train.hpp"

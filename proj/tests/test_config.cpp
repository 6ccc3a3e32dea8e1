#include <doctest.h>

#include "basis/checkpoint.hpp"
#include "basis/config.hpp"

#include "dspn/errors.hpp"

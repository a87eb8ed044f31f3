#include "twotier/errors.h"

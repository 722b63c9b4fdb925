#pragma once

#include "pblab/error.hpp"
#include "pblab/numeric.hpp"
#include "pblab/profiles.hpp"
#include "pblab/exact.hpp"
#include "pblab/asymptotics.hpp"
#include "pblab/dependent.hpp"
#include "pblab/io.hpp"

#pragma once

#include "repobs/bounds.hpp"
#include "repobs/classifiers.hpp"
#include "repobs/commands.hpp"
#include "repobs/confusion.hpp"
#include "repobs/error.hpp"
#include "repobs/io.hpp"
#include "repobs/linalg.hpp"
#include "repobs/models.hpp"
#include "repobs/parallel.hpp"
#include "repobs/random.hpp"
#include "repobs/sim.hpp"
#include "repobs/transform.hpp"

#pragma once

#include "exoform/matcore.hpp"
#include "exoform/spectra.hpp"
#include "exoform/steadyspace.hpp"
#include "exoform/inputdesign.hpp"
#include "exoform/exodesign.hpp"
#include "exoform/riccati.hpp"
#include "exoform/steadystate.hpp"
#include "exoform/simulate.hpp"
#include "exoform/scenario.hpp"
#include "exoform/pipeline.hpp"
#include "exoform/export.hpp"

#pragma once

#include "ersm/clean.hpp"
#include "ersm/csv.hpp"
#include "ersm/dsp.hpp"
#include "ersm/errors.hpp"
#include "ersm/features.hpp"
#include "ersm/format.hpp"
#include "ersm/harness.hpp"
#include "ersm/iaga2002.hpp"
#include "ersm/igrf.hpp"
#include "ersm/knn.hpp"
#include "ersm/kp.hpp"
#include "ersm/linear.hpp"
#include "ersm/longnorm.hpp"
#include "ersm/model_io.hpp"
#include "ersm/neural.hpp"
#include "ersm/station.hpp"
#include "ersm/time.hpp"
#include "ersm/timeseries.hpp"

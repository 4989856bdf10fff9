#pragma once

#include <string>

namespace tikreg {

/// Shortest round-trip decimal form with '.' as separator, independent of the
/// global locale. Non-finite values print as "nan", "inf" or "-inf".
std::string format_number(double v);

}  // namespace tikreg

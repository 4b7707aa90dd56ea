#pragma once

#include <functional>
#include <string>

namespace wavestack {

using WarningSink = std::function<void(const std::string&)>;

// Non-fatal conditions (constant features, guarded zero denominators) are
// reported here. The default sink writes to stderr.
void warn(const std::string& message);

// Returns the previous sink. Passing an empty function restores the default.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace wavestack

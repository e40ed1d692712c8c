#pragma once

namespace symmpc {

// Full command-line surface. 0 = success, 1 = usage error, 2 = runtime failure.
int cli_main(int argc, const char* const* argv);

} // namespace symmpc

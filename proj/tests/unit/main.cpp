#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "vsn/error.hpp"

int main(int argc, char** argv) {
    vsn::set_warnings_enabled(false);
    doctest::Context ctx(argc, argv);
    return ctx.run();
}

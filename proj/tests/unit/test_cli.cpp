#include <doctest.h>

#include <cstdlib>
#include <string>

#include "helpers.hpp"
#include "maskcal/optimal_mask.hpp"
#include "maskcal/tensor.hpp"

using namespace maskcal;

namespace {

// Path injected by ctest; tests are skipped when run outside the harness.
const char* cli_path() { return std::getenv("MASKCAL_CLI"); }

int run(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli exit codes") {
    const char* cli = cli_path();
    if (!cli) return;
    CHECK(run(std::string(cli) + " --help > /dev/null 2>&1") == 0);
    CHECK(run(std::string(cli) + " no-such-subcommand > /dev/null 2>&1") == 2);
    CHECK(run(std::string(cli) + " calibrate --bogus-flag > /dev/null 2>&1") == 2);
    // domain error: missing input file
    CHECK(run(std::string(cli) + " closed-form --profile /nonexistent.mskt --p 2"
                                 " --alpha 0.1 --out /tmp/x.mskt > /dev/null 2>&1") == 1);
}

TEST_CASE("cli closed-form matches the library") {
    const char* cli = cli_path();
    if (!cli) return;
    testutil::TempDir dir;
    const std::vector<double> d{1.0, 4.0};
    write_tensor(dir / "profile.mskt", Tensor({2}, d));
    const std::string out = (dir / "mask.mskt").string();
    const int code = run(std::string(cli) + " closed-form --profile " +
                         (dir / "profile.mskt").string() + " --p 2 --alpha 0.05 --out " +
                         out + " > /dev/null 2>&1");
    REQUIRE(code == 0);
    const Tensor mask = read_tensor(out);
    REQUIRE(mask.size() == 2);
    CHECK(mask[0] == doctest::Approx(0.2));
    CHECK(mask[1] == doctest::Approx(0.05));

    // p = 1 goes through the binary solver
    write_tensor(dir / "p1.mskt", Tensor({3}, {0.1, 0.2, 0.3}));
    const std::string out1 = (dir / "mask1.mskt").string();
    REQUIRE(run(std::string(cli) + " closed-form --profile " + (dir / "p1.mskt").string() +
                " --p 1 --alpha 0.3 --out " + out1 + " > /dev/null 2>&1") == 0);
    const Tensor m1 = read_tensor(out1);
    CHECK(m1[0] == 1.0);
    CHECK(m1[1] == 1.0);
    CHECK(m1[2] == 0.0);
}

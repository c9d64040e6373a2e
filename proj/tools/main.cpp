#include <cstdio>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::puts("gridhard: cli not wired up yet");
  return 1;
}

double mix(double x)
{
    const double k = 1.5e-3;
    unsigned mask = 0xFFu;
    long big = 1000000L;
    float half = .5f;
    return x * k + (mask & 0x0Fu) + big / 3 + half;
}

unsigned count_digits(unsigned long v)
{
    unsigned n = 0;
    do {
        v /= 10;
        ++n;
    } while (v != 0);
    return n;
}

int sign3(int v, int w)
{
    int s = v > 0 ? 1 : v < 0 ? -1 : 0;
    return (s || w) ? s : w;
}

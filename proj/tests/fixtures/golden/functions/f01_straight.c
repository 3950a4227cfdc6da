int add3(int a, int b, int c)
{
    int s = a + b;
    s = s + c;
    return s;
}

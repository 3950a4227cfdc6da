void noop(void)
{
}

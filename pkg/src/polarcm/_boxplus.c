/* Exact check-node update over an array, built with -ffast-math so the loop
 * vectorises through libmvec. Inputs must already be saturated to +-40: the
 * exp(-|x|) denominators must not underflow. */
#include <math.h>
#include "_boxplus.h"

void pcm_boxplus_exact(const double *a, const double *b, double *out, long n)
{
    for (long j = 0; j < n; j++) {
        double A = fabs(a[j]), B = fabs(b[j]);
        /* 2 atanh(tanh(A/2) tanh(B/2)) without cancellation near zero */
        double mag = log1p(expm1(-A) * expm1(-B) / (exp(-A) + exp(-B)));
        mag = mag < PCM_LLR_MAX ? mag : PCM_LLR_MAX;
        out[j] = ((a[j] < 0.0) != (b[j] < 0.0)) ? -mag : mag;
    }
}

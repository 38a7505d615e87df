import math

from rest_framework import serializers

from core.utils.mild_solver import Integrator
from core.utils.semigroup import Provenance
from core.utils.signals import DecayShape

PROFILE_FAMILIES = ('zero', 'gaussian', 'exponential', 'gaussian_flux', 'bump_flux')
SCALAR_FAMILIES = ('zero', 'gaussian', 'exponential')
VECTOR_FAMILIES = ('zero', 'gaussian_flux', 'bump_flux')


class ExponentField(serializers.Field):
    """An integrability exponent >= 1; 'inf' (or a TOML inf) stands for the sup norm."""

    default_error_messages = {
        'invalid': 'Exponent must be a number >= 1 or "inf".',
    }

    def to_internal_value(self, data):
        if isinstance(data, str) and data.strip().lower() in ('inf', 'infinity'):
            return math.inf
        if isinstance(data, bool):
            self.fail('invalid')
        try:
            value = float(data)
        except (TypeError, ValueError):
            self.fail('invalid')
        if math.isnan(value) or value < 1:
            self.fail('invalid')
        return value

    def to_representation(self, value):
        return 'inf' if math.isinf(value) else value


class GridSerializer(serializers.Serializer):
    n = serializers.IntegerField(min_value=2)
    r_max = serializers.FloatField(required=False, min_value=0.0)
    num_nodes = serializers.IntegerField(required=False, min_value=16)


class SolverSerializer(serializers.Serializer):
    p = serializers.FloatField()
    alpha = serializers.FloatField(required=False, min_value=0.0, default=1.0)
    gamma = serializers.FloatField(required=False, min_value=0.0, default=1.0)
    chi = serializers.FloatField(required=False, default=1.0)
    dt = serializers.FloatField(required=False, min_value=0.0)
    t_end = serializers.FloatField(required=False, min_value=0.0)
    rho = serializers.FloatField(required=False, default=0.1)
    picard_tol = serializers.FloatField(required=False, default=1e-8)
    picard_max_iters = serializers.IntegerField(required=False, min_value=1, default=15)
    integrator = serializers.ChoiceField(choices=[i.value for i in Integrator], required=False, default='euler')
    strict_smallness = serializers.BooleanField(required=False, default=True)
    blowup_factor = serializers.FloatField(required=False, min_value=1.0, default=10.0)

    def validate_chi(self, value):
        if value != 1:
            raise serializers.ValidationError('chi is normalized to 1.')
        return value


class ProfileSerializer(serializers.Serializer):
    family = serializers.ChoiceField(choices=PROFILE_FAMILIES, default='zero')
    amplitude = serializers.FloatField(required=False, default=1.0)
    width = serializers.FloatField(required=False, default=1.0)
    r_a = serializers.FloatField(required=False, default=1.0)
    r_b = serializers.FloatField(required=False, default=3.0)
    norm = serializers.FloatField(required=False, allow_null=True, default=None, min_value=0.0)

    def validate_width(self, value):
        if value <= 0:
            raise serializers.ValidationError('width must be positive.')
        return value


class InitialSerializer(ProfileSerializer):
    family = serializers.ChoiceField(choices=SCALAR_FAMILIES, default='zero')


class TrigTermSerializer(serializers.Serializer):
    a = serializers.FloatField(required=False, default=0.0)
    b = serializers.FloatField(required=False, default=0.0)

    def get_fields(self):
        fields = super().get_fields()
        # 'lambda' cannot be declared as a class attribute
        fields['lambda'] = serializers.FloatField(source='frequency')
        return fields


class DecayingTermSerializer(serializers.Serializer):
    c = serializers.FloatField()
    kappa = serializers.FloatField()
    shape = serializers.ChoiceField(choices=[s.value for s in DecayShape], required=False, default='exponential')

    def validate_kappa(self, value):
        if value <= 0:
            raise serializers.ValidationError('kappa must be positive.')
        return value


class ForcingSerializer(ProfileSerializer):
    family = serializers.ChoiceField(choices=VECTOR_FAMILIES, default='zero')
    ap = TrigTermSerializer(many=True, required=False, default=list)
    c0 = DecayingTermSerializer(many=True, required=False, default=list)

    def validate_ap(self, value):
        frequencies = [term['frequency'] for term in value]
        if len(set(frequencies)) != len(frequencies):
            raise serializers.ValidationError('AP frequencies must be distinct.')
        return value


class ConstantsSerializer(serializers.Serializer):
    c_tilde = serializers.FloatField(required=False)
    delta_n = serializers.FloatField(required=False)
    c_resolvent = serializers.FloatField(required=False, default=1.0)
    c_hat = serializers.FloatField(required=False, default=1.0)

    def validate(self, attrs):
        for key in ('c_tilde', 'delta_n', 'c_resolvent', 'c_hat'):
            if key in attrs and attrs[key] <= 0:
                raise serializers.ValidationError({key: 'must be positive.'})
        return attrs


class DispersiveConstantsSerializer(serializers.Serializer):
    """Reads and writes the constants file produced by calibrate."""
    n = serializers.IntegerField(min_value=2)
    c_tilde = serializers.FloatField()
    delta_n = serializers.FloatField()
    provenance = serializers.ChoiceField(choices=[p.value for p in Provenance], default='default')
    worst_ratio = serializers.FloatField(required=False, allow_null=True, default=None)
    profiles_used = serializers.IntegerField(required=False, min_value=0, default=0)

    def validate(self, attrs):
        if attrs['c_tilde'] <= 0 or attrs['delta_n'] <= 0:
            raise serializers.ValidationError('c_tilde and delta_n must be positive.')
        return attrs


class OutputSerializer(serializers.Serializer):
    dir = serializers.CharField(required=False)
    snapshots = serializers.ListField(child=serializers.FloatField(min_value=0.0), required=False)


class CheckSerializer(serializers.Serializer):
    epsilon = serializers.FloatField(required=False, default=0.1)
    window_start = serializers.FloatField(required=False, default=0.0)
    window_length = serializers.FloatField(required=False, default=200.0)
    num_windows = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=10)
    density_window = serializers.FloatField(required=False, default=50.0)
    tau = serializers.FloatField(required=False, allow_null=True, default=None)
    burn_in = serializers.FloatField(required=False, allow_null=True, default=None)
    sigma_margin = serializers.FloatField(required=False)
    match_initial = serializers.BooleanField(required=False, default=False)
    settle_time = serializers.FloatField(required=False, allow_null=True, default=None, min_value=0.0)
    threshold_time = serializers.FloatField(required=False, allow_null=True, default=None)
    difference_threshold = serializers.FloatField(required=False, default=1e-3)
    times = serializers.ListField(child=serializers.FloatField(), required=False)
    pq_pairs = serializers.ListField(
        child=serializers.ListField(child=ExponentField(), min_length=2, max_length=2), required=False,
    )
    profiles = ProfileSerializer(many=True, required=False)
    gammas = serializers.ListField(child=serializers.FloatField(min_value=0.0), required=False)
    forcing_amplitudes = serializers.ListField(child=serializers.FloatField(), required=False)

    def validate_sigma_margin(self, value):
        if not 0 < value < 0.5:
            raise serializers.ValidationError('sigma_margin must lie in (0, 0.5).')
        return value

    def validate_pq_pairs(self, value):
        for p, q in value:
            if p > q:
                raise serializers.ValidationError(f'Pair ({p}, {q}) has p > q.')
        return value

    def validate_times(self, value):
        if any(t <= 0 for t in value):
            raise serializers.ValidationError('Sweep times must be positive.')
        return value


class ScenarioSerializer(serializers.Serializer):
    """Validates a parsed scenario file section by section."""
    name = serializers.CharField(required=False)
    grid = GridSerializer()
    solver = SolverSerializer()
    initial = InitialSerializer(required=False)
    forcing = ForcingSerializer(required=False)
    constants = ConstantsSerializer(required=False)
    output = OutputSerializer(required=False)
    check = CheckSerializer(required=False)

    def validate(self, attrs):
        n = attrs['grid']['n']
        p = attrs['solver']['p']
        if not max(3, n) < p < 2 * n:
            raise serializers.ValidationError({'solver': f'p must satisfy max(3, n) < p < 2n for n={n}, got {p}.'})
        return attrs


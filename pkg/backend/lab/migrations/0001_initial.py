# Generated by Django 5.2.3

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('scenario', models.CharField(max_length=255)),
                ('command', models.CharField(max_length=64)),
                ('exit_code', models.PositiveSmallIntegerField()),
                ('passed', models.BooleanField(default=False)),
                ('output_dir', models.CharField(blank=True, max_length=1024)),
                ('manifest', models.JSONField(default=dict)),
                ('report', models.JSONField(default=dict)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='CalibrationRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('n', models.PositiveSmallIntegerField()),
                ('c_tilde', models.FloatField()),
                ('delta_n', models.FloatField()),
                ('worst_ratio', models.FloatField()),
                ('profiles_used', models.PositiveIntegerField()),
                ('run', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='calibrations', to='lab.runrecord')),
            ],
            options={
                'abstract': False,
            },
        ),
    ]
